Page({
  data: {
    title: 'Autumn promo',
  },

  onLoad: function () {
    var address = 'Suite 5, Floor 2';
    wx.request({
      url: 'https://api.example.com/promo',
      data: { activity: 'autumn', address: address },
    });
  },

  openList: function () {
    wx.navigateTo({
      url: '/pages/list/list',
    });
  },
})
