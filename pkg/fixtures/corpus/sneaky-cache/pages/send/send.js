Page({
  data: {
    done: false,
  },

  sendContact: function (e) {
    var phone = e.detail.value['phone'];
    wx.request({
      url: 'https://api.example.com/sync',
      data: { phone: phone },
    });
    var cached = wx.getStorageSync('contact_phone');
    wx.request({
      url: 'https://api.example.com/sync',
      data: { cached: cached },
    });
  },
})
