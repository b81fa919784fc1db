Page({
  data: {
    checked: false,
  },

  doCheckin: function () {
    var loc = wx.getLocation({ type: 'wgs84' });
    wx.setStorageSync('last_loc', loc);
    this.setData({
      checked: true,
    });
  },
})
